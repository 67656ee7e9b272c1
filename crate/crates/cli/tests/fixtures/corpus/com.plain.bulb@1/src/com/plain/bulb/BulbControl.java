package com.plain.bulb;

import android.bluetooth.BluetoothDevice;
import android.bluetooth.BluetoothGatt;
import android.content.Context;
import android.bluetooth.BluetoothGattCharacteristic;

public class BulbControl {
    private BluetoothGatt gatt;
    private BluetoothGattCharacteristic colorChar;

    public void attach(Context ctx, BluetoothDevice device) {
        gatt = device.connectGatt(ctx, false, null);
    }

    public void setColor(int rgb) {
        byte[] data = new byte[] { (byte) (rgb >> 16), (byte) (rgb >> 8), (byte) rgb };
        push(data);
    }

    private void push(byte[] data) {
        colorChar.setValue(data);
        gatt.writeCharacteristic(colorChar);
    }
}
